# %% [markdown]
# # The autodiff engine
# A small reverse-mode engine over numpy arrays. Every primitive is checked
# against central differences in double precision.

# %%
import numpy as np

from crossmpt import tensor as T
from crossmpt.masks import AttentionMask
from crossmpt.tensor import Tensor, grad_check

rng = np.random.default_rng(0)
x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
loss = T.sum(T.mul(x, x))
loss.backward()
np.allclose(x.grad, 2 * x.data)

# %% [markdown]
# Masked multi-head attention: blocked entries get exactly zero weight.

# %%
allowed = np.array([[1, 1, 0], [0, 1, 1]], dtype=bool)
q = Tensor(rng.normal(size=(2, 8)), requires_grad=True)
k = Tensor(rng.normal(size=(3, 8)), requires_grad=True)
v = Tensor(rng.normal(size=(3, 8)), requires_grad=True)
out, scores = T.masked_softmax_attention(q, k, v, AttentionMask(allowed), heads=2)
print(scores.data.round(3))

# %%
report = grad_check(lambda: T.sum(T.gelu(T.masked_softmax_attention(q, k, v, AttentionMask(allowed), 2)[0])),
                    [q, k, v])
print(report)
