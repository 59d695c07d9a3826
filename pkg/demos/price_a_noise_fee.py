"""
Pricing the privacy fee
=======================

A pool that adds masking noise to every trade hands the next trader a free
arbitrage: undo the noise, pocket the difference. The fee below charges each
trader the expected value of that reversal, so the noise earns the pool
exactly what it gives away.
"""

import math

from noisycfmm import PrivacySpec, TradingCurve, binary_mechanism, noise_fee

# the running example everywhere in this repo: x*y = 10^4, trade of 1 X,
# masking interval [0, 2], privacy budget epsilon = 2
cp = TradingCurve.constant_product(1e4)
spec = PrivacySpec(0.0, 2.0, 2.0)
dist = binary_mechanism(1.0, spec)

quote = noise_fee(cp, 100.0, 1.0, dist)
print("two-point noise for a trade of 1 X:")
for atom in dist.atoms:
    print(f"  eta = {atom.eta:+.6f} with probability {atom.p:.6f}")
print(f"fee on the shallow pool (K = 1e4):  {quote.gamma:.6e} Y")

deep = noise_fee(TradingCurve.constant_product(4e4), 200.0, 1.0, dist)
print(f"fee on a pool with doubled depth:   {deep.gamma:.6e} Y")
print(f"ratio deep/shallow: {deep.gamma / quote.gamma:.4f}  (inverse-liquidity scaling)")

# no privacy requested, nothing to reverse, nothing to charge
none = noise_fee(cp, 100.0, 1.0, binary_mechanism(1.0, PrivacySpec(1.0, 1.0, 2.0)))
print(f"fee for a degenerate masking interval: {none.gamma}")

print()
print("the fee grows with the masking width (more noise to undo):")
print(f"{'width':>8}  {'half-spread W':>14}  {'fee (Y)':>12}")
for width in (0.5, 1.0, 2.0, 4.0, 8.0):
    s = PrivacySpec(1.0 - width / 2.0, 1.0 + width / 2.0, 2.0)
    w = width / 2.0 / math.tanh(1.0)
    g = noise_fee(cp, 100.0, 1.0, binary_mechanism(1.0, s)).gamma
    print(f"{width:8.1f}  {w:14.6f}  {g:12.6e}")
