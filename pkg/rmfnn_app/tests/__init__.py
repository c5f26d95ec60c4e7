from .test_network import *
from .test_forward_models import *
from .test_fidelity import *
from .test_surrogates import *
from .test_uq import *
from .test_serializers import *
from .test_models import *
from .test_commands import *
from .test_experiments import *
