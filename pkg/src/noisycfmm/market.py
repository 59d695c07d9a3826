"""The noisy market maker: reserves, hidden account, fee ledger, trades.

One accepted trade runs through six stages: validate the trade against its
privacy spec, price the noise, collect the fee into the ledger, pay the
trader out of the visible reserves at the pre-noise state, draw the noise,
and execute the noise trade against the operator's hidden account. States
are immutable; execute_trade returns the successor state plus a record, so a
rejected trade cannot leave anything half-applied. A trade is rejected when
the hidden account could not fund the worst-case atom of the noise that was
about to be drawn.

The eavesdropper model: an adversary who sees spot prices before and after
a trade recovers the reserve change exactly by inverting the price curve.
Without noise that change is the trade itself; with noise it is trade plus
noise, which is the whole point.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, replace
from typing import Callable, Sequence, TextIO

import numpy as np

from .curve import TradingCurve
from .errors import HiddenAccountError, SpecViolationError
from .fee import noise_fee
from .privacy import NoiseDistribution, PrivacySpec, binary_mechanism

DistFactory = Callable[[float, PrivacySpec], NoiseDistribution]


class FeePolicyKind(enum.Enum):
    NOISE_FEE = "noise_fee"
    ZERO = "zero"
    FIXED = "fixed"
    SCALED = "scaled"


@dataclass(frozen=True, slots=True)
class FeePolicy:
    """What the market actually charges relative to the quoted noise fee.

    NOISE_FEE charges the quote itself; ZERO, FIXED and SCALED exist to run
    counterfactual experiments (undercharging, flat fees, overcharging).
    Whatever the policy, a trade with zero noise pays nothing: the fee prices
    noise, and there is none to price.
    """

    kind: FeePolicyKind
    value: float = 0.0

    @classmethod
    def noise_fee(cls) -> "FeePolicy":
        return cls(FeePolicyKind.NOISE_FEE)

    @classmethod
    def zero(cls) -> "FeePolicy":
        return cls(FeePolicyKind.ZERO)

    @classmethod
    def fixed(cls, value: float) -> "FeePolicy":
        return cls(FeePolicyKind.FIXED, value)

    @classmethod
    def scaled(cls, multiplier: float) -> "FeePolicy":
        return cls(FeePolicyKind.SCALED, multiplier)

    def charge(self, quoted_gamma: float) -> float:
        if self.kind is FeePolicyKind.NOISE_FEE:
            return quoted_gamma
        if self.kind is FeePolicyKind.ZERO:
            return 0.0
        if self.kind is FeePolicyKind.FIXED:
            return self.value
        return self.value * quoted_gamma

    def to_json_obj(self) -> dict:
        obj: dict = {"policy": self.kind.value}
        if self.kind is FeePolicyKind.FIXED:
            obj["value"] = self.value
        elif self.kind is FeePolicyKind.SCALED:
            obj["multiplier"] = self.value
        return obj


NOISE_FEE_POLICY = FeePolicy.noise_fee()


@dataclass(frozen=True, slots=True)
class TradeRecord:
    delta: float
    spec: PrivacySpec
    y_out: float  # Y paid to the trader; negative when the trader pays Y in
    gamma: float
    eta: float
    pre_x: float
    post_x: float

    def to_json_obj(self) -> dict:
        return {
            "delta": self.delta,
            "tau": [self.spec.lower, self.spec.upper],
            "epsilon": self.spec.epsilon,
            "y_out": self.y_out,
            "gamma": self.gamma,
            "eta": self.eta,
            "pre_x": self.pre_x,
            "post_x": self.post_x,
        }


@dataclass(frozen=True, slots=True)
class MarketState:
    """Immutable snapshot: visible reserves, hidden account, ledger, history."""

    curve: TradingCurve
    x: float
    hidden_x: float
    hidden_y: float
    fee_ledger: float = 0.0
    trade_log: tuple[TradeRecord, ...] = ()
    topups: tuple[tuple[float, float], ...] = ()

    @property
    def y(self) -> float:
        return self.curve.y_of_x(self.x)

    @property
    def spot(self) -> float:
        return self.curve.spot_price(self.x)

    def top_up(self, add_x: float, add_y: float) -> "MarketState":
        """Operator funds the hidden account. Logged so profit accounting can
        ignore it; never part of any trader's flows."""
        if add_x < 0 or add_y < 0:
            raise ValueError("top-ups only add funds")
        return replace(
            self,
            hidden_x=self.hidden_x + add_x,
            hidden_y=self.hidden_y + add_y,
            topups=self.topups + ((add_x, add_y),),
        )


def support_check(state: MarketState, delta: float, dist: NoiseDistribution) -> bool:
    """Can the hidden account fund every atom of the noise for this trade?

    A positive noise trade sells eta units of X to the visible reserves, so
    the hidden account needs that much X; a negative one buys X back for
    Y(s+eta) - Y(s) units of Y. The check is worst-case over all atoms since
    the draw happens after acceptance. Atoms whose noised reserve would leave
    the curve domain are unsupportable by definition.
    """
    s = state.x + delta
    if not state.curve.contains(s):
        return False
    y_s = state.curve.y_of_x(s)
    for atom in dist.atoms:
        eta = atom.eta
        if not state.curve.contains(s + eta):
            return False
        if eta > 0.0 and state.hidden_x < eta:
            return False
        if eta < 0.0 and state.hidden_y < state.curve.y_of_x(s + eta) - y_s:
            return False
    return True


def execute_trade(
    state: MarketState,
    delta: float,
    spec: PrivacySpec,
    rng: np.random.Generator | None = None,
    *,
    dist_factory: DistFactory = binary_mechanism,
    fee_policy: FeePolicy = NOISE_FEE_POLICY,
) -> tuple[MarketState, TradeRecord]:
    """Run one trade through the mechanism; returns (successor state, record).

    The trader sells ``delta`` units of X (buys, when negative), is paid at
    the pre-noise state, and pays the privacy fee into the ledger. The noise
    is then drawn and executed against the hidden account, so the successor's
    visible reserve is x + delta + eta. Raises without any state change when
    the trade violates its masking interval, exits the curve domain, or is
    unsupportable by the hidden account.
    """
    if not spec.contains(delta):
        raise SpecViolationError(
            f"trade {delta} outside masking interval [{spec.lower}, {spec.upper}]"
        )
    dist = dist_factory(delta, spec)
    quote = noise_fee(state.curve, state.x, delta, dist)  # also checks the domain
    if not support_check(state, delta, dist):
        raise HiddenAccountError(
            f"hidden account (x={state.hidden_x}, y={state.hidden_y}) cannot support "
            f"the worst-case noise for trade {delta}"
        )
    gamma = 0.0 if dist.is_zero_noise else fee_policy.charge(quote.gamma)
    eta = dist.sample(rng)

    s = state.x + delta
    y_pre = state.curve.y_of_x(state.x)
    y_s = state.curve.y_of_x(s)
    post_x = s + eta
    y_post = state.curve.y_of_x(post_x)

    record = TradeRecord(
        delta=delta,
        spec=spec,
        y_out=y_pre - y_s,
        gamma=gamma,
        eta=eta,
        pre_x=state.x,
        post_x=post_x,
    )
    new_state = replace(
        state,
        x=post_x,
        hidden_x=state.hidden_x - eta,
        hidden_y=state.hidden_y + (y_s - y_post),
        fee_ledger=state.fee_ledger + gamma,
        trade_log=state.trade_log + (record,),
    )
    return new_state, record


def eavesdrop_infer(pre_price: float, post_price: float, curve: TradingCurve) -> float:
    """Reserve change recovered from two spot-price observations."""
    return curve.x_of_price(post_price) - curve.x_of_price(pre_price)


@dataclass(frozen=True, slots=True)
class ExternalMarket:
    """Infinitely deep outside venue quoting a single true price for X."""

    true_price: float

    def settle(self, x_amount: float) -> float:
        """Y received for selling ``x_amount`` of X (pay, when negative)."""
        return self.true_price * x_amount


TRADE_LOG_COLUMNS = (
    "seq", "delta", "l", "u", "epsilon", "y_out", "gamma", "eta", "pre_x", "post_x",
)


def _record_row(seq: int, r: TradeRecord) -> list:
    return [
        seq, r.delta, r.spec.lower, r.spec.upper, r.spec.epsilon,
        r.y_out, r.gamma, r.eta, r.pre_x, r.post_x,
    ]


def trade_log_to_csv(records: Sequence[TradeRecord], out: TextIO | str) -> None:
    """Write the trade log as CSV, one row per trade in execution order."""
    if isinstance(out, str):
        with open(out, "w", newline="") as handle:
            trade_log_to_csv(records, handle)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRADE_LOG_COLUMNS)
    for seq, record in enumerate(records):
        writer.writerow([repr(v) if isinstance(v, float) else v for v in _record_row(seq, record)])


def trade_log_to_jsonl(records: Sequence[TradeRecord], out: TextIO | str) -> None:
    """Write the trade log as JSON lines, one object per trade."""
    if isinstance(out, str):
        with open(out, "w") as handle:
            trade_log_to_jsonl(records, handle)
        return
    for seq, record in enumerate(records):
        obj = {"seq": seq, **record.to_json_obj()}
        out.write(json.dumps(obj, sort_keys=True) + "\n")


def trade_log_from_csv(source: TextIO | str) -> list[dict]:
    """Read back a CSV trade log as typed dicts (floats everywhere but seq)."""
    if isinstance(source, str):
        with open(source, newline="") as handle:
            return trade_log_from_csv(handle)
    rows = []
    for row in csv.DictReader(source):
        parsed = {k: (int(v) if k == "seq" else float(v)) for k, v in row.items()}
        rows.append(parsed)
    return rows
