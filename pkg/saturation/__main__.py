import sys

from .saturation_runner import main

sys.exit(main())
