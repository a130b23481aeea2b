# %% [markdown]
# # Attention masks, densities and FLOPs
# CrossMPT attends between bits and checks through H and its transpose.
# ECCT runs one self-attention over n + m positions. The CrossMPT maps are
# smaller and sparser, which shows up directly in the FLOP count.

# %%
import numpy as np

from crossmpt.codes import load_code
from crossmpt.evaluation import flops_for_code
from crossmpt.masks import build_crossmpt_masks, build_ecct_mask, ecct_block_counts, mask_density

H = np.array([[1, 1, 0], [0, 1, 1]])
ecct = build_ecct_mask(H)
print(ecct.allowed.astype(int))
print(ecct_block_counts(ecct, 3), "density", mask_density(ecct))

# %%
masks = build_crossmpt_masks(H)
print(masks.m2s.allowed.astype(int))
print(masks.s2m.allowed.astype(int))

# %% [markdown]
# Densities in percent for the larger codes.

# %%
for name in ["bch_63_45", "ldpc_121_70", "ldpc_121_80", "turbo_132_40", "wran_384_320"]:
    code = load_code(name)
    rho1 = 100 * mask_density(build_ecct_mask(code.H))
    rho2 = 100 * mask_density(build_crossmpt_masks(code.H))
    print(f"{name:14s} CrossMPT {rho2:6.2f}  ECCT {rho1:6.2f}")

# %% [markdown]
# One decoder layer at N = 6, d = 128, counting the four projections and the
# two attention products, 2 FLOPs per multiply-accumulate.

# %%
for name in ["bch_63_45", "ldpc_121_70", "ldpc_121_80", "turbo_132_40"]:
    rep = flops_for_code(load_code(name), num_layers=6, embed_dim=128)
    print(f"{name:14s} CrossMPT {rep.crossmpt.layer_dense / 1e6:6.2f}M  "
          f"ECCT {rep.ecct.layer_dense / 1e6:6.2f}M  ratio {rep.ratio:.3f}")

# %% [markdown]
# The full-model totals, with and without skipping masked entries.

# %%
rep = flops_for_code(load_code("bch_63_45"))
print(rep.to_csv())
