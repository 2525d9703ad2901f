import sys

from plantnav.cli import main

sys.exit(main())
