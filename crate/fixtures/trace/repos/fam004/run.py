import json
import sys

cfg = json.load(open(sys.argv[2]))
