"""Module runner alias."""

import sys

from .cli import main

sys.exit(main())
