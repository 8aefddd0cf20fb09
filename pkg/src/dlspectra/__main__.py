import sys

from dlspectra.cli import main

sys.exit(main())
