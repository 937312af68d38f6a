import sys
import raeg.cli


sys.exit(raeg.cli.main())
