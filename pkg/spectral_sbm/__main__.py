import sys

from spectral_sbm.cli import main

sys.exit(main())
