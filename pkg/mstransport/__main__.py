import sys

from mstransport.cli import main

sys.exit(main())
