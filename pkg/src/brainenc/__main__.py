import sys

from brainenc.cli import main

sys.exit(main())
