import sys

from hiresim.cli import main

sys.exit(main())
