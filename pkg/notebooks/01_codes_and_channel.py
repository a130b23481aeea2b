# %% [markdown]
# # Codes and the channel
# Load a bundled parity-check matrix, derive a generator, push random
# codewords through BPSK + AWGN and look at what the decoders receive.

# %%
import numpy as np

from crossmpt.channel import ebno_to_sigma, modulate_bpsk, noise_target, transmit_awgn
from crossmpt.codes import bundled_codes, encode, load_code, syndrome

print(bundled_codes())

# %%
code = load_code("bch_31_16")
print(code.name, code.n, code.k, "rate", round(code.rate, 3))
print("G H^T == 0:", not ((code.G.astype(int) @ code.H.T) % 2).any())

# %% [markdown]
# Encode a few random messages. Every codeword has a zero syndrome.

# %%
rng = np.random.default_rng(0)
msgs = rng.integers(0, 2, size=(5, code.k))
x = encode(msgs, code)
syndrome(x, code.H).sum(axis=1)

# %% [markdown]
# At 4 dB the noise flips a few percent of the signs. The syndrome lights up
# and the multiplicative-noise target marks exactly the flipped positions.

# %%
sigma = ebno_to_sigma(4.0, code.rate)
rx = transmit_awgn(modulate_bpsk(x), sigma, rng, H=code.H)
flips = noise_target(rx.y, modulate_bpsk(x))
print("sigma", round(float(sigma), 4))
print("flipped bits per frame", flips.sum(axis=1))
print("unsatisfied checks per frame", rx.synd.sum(axis=1))
