"""Scratch sweep driver (not part of the package)."""
import sys
import tempfile
import time

from dataclasses import replace
from xva.config import RunConfig
from xva.train import train, evaluate

root = sys.argv[1]
which = sys.argv[2]          # "full" or "off"
lr = float(sys.argv[3])
seed = int(sys.argv[4]) if len(sys.argv) > 4 else 0

cfg = RunConfig(epochs=20, lr=lr, seed=seed)
if which == "off":
    cfg = replace(cfg, aim=False, acp=False, kt=False)
out = tempfile.mkdtemp(prefix=f"xva_sweep_{which}_{lr}_{seed}_")
t0 = time.time()
res = train(root, cfg, out)
report, _ = evaluate(root, cfg, res.model, out_dir=out)
h = res.history[-1]
print(f"{which} lr={lr} seed={seed} data={root.split('/')[-1]}: "
      f"cls {h['cls']:.3f} acp {h['acp']:.3f} kt {h['kt']:.3f} | "
      f"KLD {report.kld:.3f} SIM {report.sim:.3f} NSS {report.nss:.3f}  ({time.time()-t0:.0f}s)",
      flush=True)
