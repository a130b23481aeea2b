# %% [markdown]
# # Training a small CrossMPT
# A two-layer, 32-dimensional decoder for the (31,16) BCH code. The full
# recipe (1000 epochs of 1000 batches) is far beyond a desktop, so this runs
# a few epochs with a larger starting learning rate. Raise ``EPOCHS`` to
# 20 for the run the acceptance suite uses (roughly 12 minutes on one core).

# %%
import numpy as np

from crossmpt.codes import load_code
from crossmpt.evaluation import BPDecoder, HardDecoder, NNDecoder, estimate_ber
from crossmpt.model import ModelConfig, param_count
from crossmpt.train import TrainConfig, run_training

EPOCHS = 3
code = load_code("bch_31_16")
cfg = ModelConfig.for_code(code, num_layers=2, embed_dim=32)
tc = TrainConfig(epochs=EPOCHS, batches_per_epoch=200, lr_start=1e-3, lr_end=5e-7, seed=0)

# %%
rec = run_training(tc, code, cfg, progress=lambda e, loss, lr: print(f"epoch {e + 1} loss {loss:.4f} lr {lr:.2e}"))
print("parameters", param_count(rec.params)[0], "initial loss", round(rec.initial_loss, 3))

# %% [markdown]
# Compare with the hard decision and with BP at a few Eb/N0 values.

# %%
snrs = [4.0, 5.0, 6.0]
for dec in (HardDecoder(), BPDecoder(code), NNDecoder(rec.params, cfg, code)):
    rep = estimate_ber(dec, code, snrs, min_frame_errors=200, max_frames=100_000, seed=1)
    print(f"{rep.decoder:9s}", "  ".join(f"{p.ber:.2e}" for p in rep.points))
