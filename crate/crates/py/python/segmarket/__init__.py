from ._segmarket import *  # noqa: F401,F403
from ._segmarket import __all__  # noqa: F401
