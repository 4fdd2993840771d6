import sys

from evo2048.cli import main

sys.exit(main())
