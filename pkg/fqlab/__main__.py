import sys

from fqlab.cli import main

sys.exit(main())
