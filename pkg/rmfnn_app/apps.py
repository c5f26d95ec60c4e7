from django.apps import AppConfig


class RmfnnAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'rmfnn_app'
    verbose_name = 'Residual multi-fidelity surrogates'
