import sys

from sentfeat.cli import main

sys.exit(main())
