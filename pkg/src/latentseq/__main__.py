import sys

from latentseq.harness.cli import main

sys.exit(main())
