# %% [markdown]
# # Belief propagation and ML decoding
# Sum-product and min-sum BP on the Tanner graph, exhaustive ML for short
# codes, and the BER harness that compares them.

# %%
import numpy as np

from crossmpt.classical import bp_decode, ml_decode
from crossmpt.codes import load_code
from crossmpt.evaluation import BPDecoder, HardDecoder, MLDecoder, estimate_ber

ham = load_code("hamming_7_4")
y = np.array([0.9, 1.1, -0.2, 0.8, 1.2, 0.7, 1.0])
print(bp_decode(ham, y, sigma=0.6))
print(ml_decode(ham, y).bits)

# %% [markdown]
# BER over a few Eb/N0 points. 200 frame errors per point keeps this quick.

# %%
snrs = [3.0, 4.0, 5.0, 6.0]
for dec in (HardDecoder(), BPDecoder(ham), BPDecoder(ham, variant="min_sum"), MLDecoder(ham)):
    rep = estimate_ber(dec, ham, snrs, min_frame_errors=200, seed=0)
    print(f"{rep.decoder:5s}", "  ".join(f"{p.ber:.2e}" for p in rep.points))

# %% [markdown]
# Reports serialise to CSV, with -ln(BER) in its own column.

# %%
print(estimate_ber(BPDecoder(ham), ham, snrs, min_frame_errors=200, seed=0).to_csv())
