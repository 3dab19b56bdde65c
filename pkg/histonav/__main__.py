import sys

from histonav.cli import main

sys.exit(main())
