"""Model configuration and the named parameter layout of both variants."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError

VARIANTS = ("psjnet1", "psjnet2")
ABLATIONS = {
    None: VARIANTS,
    "psj": VARIANTS,
    "sj": ("psjnet1",),
    "s": ("psjnet2",),
    "j": ("psjnet2",),
}
DIRECTIONS = (("A", "B"), ("B", "A"))


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "psjnet2"
    k: int = 4
    hidden: int = 90
    ablate: str | None = None
    share_role_transfer: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.ablate not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablate!r}; choose from psj, sj, s, j")
        if self.variant not in ABLATIONS[self.ablate]:
            raise ConfigError(f"ablation -{self.ablate.upper()} does not apply to {self.variant}")
        if self.k < 1:
            raise ConfigError(f"role count K must be >= 1, got {self.k}")
        if self.hidden < 1:
            raise ConfigError(f"hidden size must be >= 1, got {self.hidden}")

    @property
    def uses_cross(self):
        return self.ablate != "psj"

    @property
    def uses_split(self):
        return self.uses_cross and self.ablate not in ("sj", "s")

    @property
    def uses_join(self):
        return self.variant == "psjnet2" and self.uses_cross and self.ablate != "j"

    def as_dict(self):
        return asdict(self)


def direction_name(src, tgt):
    return f"{src}2{tgt}"


def _gru(prefix, d, n_in):
    return {f"{prefix}.W_z": (d, n_in + d), f"{prefix}.W_r": (d, n_in + d), f"{prefix}.W_h": (d, n_in + d)}


def param_shapes(cfg, vocab_sizes):
    """Ordered ``{name: shape}`` for every trainable tensor of ``cfg``."""
    d, K = cfg.hidden, cfg.k
    shapes = {}
    for dom in ("A", "B"):
        shapes[f"emb.{dom}"] = (vocab_sizes[dom], d)
        shapes.update(_gru(f"enc.{dom}", d, d))
    if cfg.uses_cross:
        for src, tgt in DIRECTIONS:
            dn = direction_name(src, tgt)
            if cfg.uses_split:
                shapes.update(
                    {
                        f"split.{dn}.role_emb": (K, d),
                        f"split.{dn}.W_fA": (d, d),
                        f"split.{dn}.W_fB": (d, d),
                        f"split.{dn}.U_f": (d, d),
                        f"split.{dn}.V_f": (d, d),
                        f"split.{dn}.b_f": (d,),
                        f"split.{dn}.W_h": (d, d),
                        f"split.{dn}.U_h": (d, d),
                        f"split.{dn}.V_h": (d, d),
                        f"split.{dn}.b_h": (d,),
                    }
                )
            if cfg.variant == "psjnet1" or cfg.share_role_transfer:
                shapes.update(_gru(f"transfer.{dn}", d, d))
            else:
                for k in range(K):
                    shapes.update(_gru(f"transfer.{dn}.r{k}", d, d))
            if cfg.uses_join:
                for stage in ("s1", "s2"):
                    shapes[f"join.{dn}.{stage}.v"] = (d,)
                    shapes[f"join.{dn}.{stage}.W_i"] = (d, d)
                    shapes[f"join.{dn}.{stage}.W_j"] = (d, d)
    for dom in ("A", "B"):
        shapes[f"dec.{dom}.W"] = (vocab_sizes[dom], 2 * d)
        shapes[f"dec.{dom}.b"] = (vocab_sizes[dom],)
    return shapes


def is_bias(name):
    leaf = name.rsplit(".", 1)[-1]
    return leaf in ("b", "b_f", "b_h")


def transfer_prefix(cfg, dn, k):
    if cfg.variant == "psjnet1" or cfg.share_role_transfer:
        return f"transfer.{dn}"
    return f"transfer.{dn}.r{k}"
