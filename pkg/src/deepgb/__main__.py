import sys

from deepgb.cli import main

sys.exit(main())
