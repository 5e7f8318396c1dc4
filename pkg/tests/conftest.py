import os, sys
sys.path.append(os.path.dirname(os.path.dirname(__file__)))
for key in [k for k in os.environ if k.startswith('DPPCOND_')]:
    os.environ.pop(key, None)
