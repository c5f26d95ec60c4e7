# Generated by Django 4.2.5 on 2026-10-17 09:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=32)),
                ('problem', models.CharField(blank=True, choices=[('damped', 'Damped oscillator'), ('pulsed', 'Pulsed oscillator'), ('ivp', 'Parametric IVP'), ('wave', 'Wave IBVP')], max_length=16)),
                ('config', models.JSONField(default=dict)),
                ('output_dir', models.CharField(blank=True, max_length=512)),
                ('status', models.CharField(choices=[('running', 'Running'), ('finished', 'Finished'), ('failed', 'Failed')], default='running', max_length=16)),
                ('started_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-started_at'],
            },
        ),
        migrations.CreateModel(
            name='TrialResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('method', models.CharField(choices=[('RMFNN', 'Residual multi-fidelity network'), ('RMFNN_ALT', 'Residual network on top of direct low-fidelity evaluations'), ('MFNN', 'Multi-fidelity network'), ('HFNN', 'High-fidelity network'), ('HFM', 'Direct high-fidelity model')], max_length=16)),
                ('seed', models.CharField(max_length=24)),
                ('n_hf', models.PositiveIntegerField(blank=True, null=True)),
                ('width', models.PositiveIntegerField(blank=True, null=True)),
                ('depth', models.PositiveIntegerField(blank=True, null=True)),
                ('eps_tol', models.FloatField(blank=True, null=True)),
                ('mse', models.FloatField(blank=True, null=True)),
                ('error', models.FloatField(blank=True, null=True)),
                ('diverged', models.BooleanField(default=False)),
                ('epochs_run', models.PositiveIntegerField(blank=True, null=True)),
                ('train_time_s', models.FloatField(blank=True, null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='trials', to='rmfnn_app.experimentrun')),
            ],
            options={
                'ordering': ['id'],
            },
        ),
    ]
