# %% [markdown]
# # Reading the attention maps
# Corrupt the first bit of the all-zero codeword and look at how much
# attention each bit receives from the checks (column sums of the
# check-to-bit map, averaged over heads and layers).

# %%
import numpy as np

from crossmpt.channel import receive
from crossmpt.codes import load_code
from crossmpt.model import ModelConfig, attention_scores, build_masks, init_params

code = load_code("bch_31_16")
cfg = ModelConfig.for_code(code, num_layers=2, embed_dim=32)
params = init_params(cfg, np.random.default_rng(0))

y = np.ones(code.n)
y[0] = -0.8
rx = receive(y[None], code.H)
masks = build_masks(cfg, code.H)

# %%
cols = attention_scores(params, cfg, rx, masks, aggregate="mean_over_layers", reduce="column_sum")
print(np.round(cols["s2m"][0], 3))

# %% [markdown]
# The column sums add up to the number of query rows, here the 15 checks.
# Swap in a trained checkpoint (``crossmpt.model.load_checkpoint``) to see
# the corrupted bit stand out.

# %%
cols["s2m"][0].sum()
