import sys

from lensworks.cli import main

sys.exit(main())
