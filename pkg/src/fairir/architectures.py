"""Default network widths, patience and learning rates per dataset and model family.

Width lists give the units of each layer of a network. For the FAIR families
the three lists are the weighting, predictor and sensitive networks; for FAD
they are the encoder and the two heads; for FAD_prob the encoder entry is
``hidden widths + [latent]`` where the last layer emits a mean and a log
standard deviation per latent unit. Predictor and sensitive heads always end
in a single sigmoid unit, so a trailing ``1`` is appended when missing.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError

INPUT_WIDTHS = {"adult": 93, "readmission": 931, "expenditures": 138, "german_sex": 58, "german_age": 58,
                "synthetic": 7}


@dataclass(frozen=True)
class Architecture:
    theta: tuple[int, ...]
    phi: tuple[int, ...]
    psi: tuple[int, ...]
    patience: int
    learning_rate: float
    batch_norm: bool = True
    adversary_learning_rate: float | None = None

    @property
    def adversary_lr(self) -> float:
        return self.learning_rate if self.adversary_learning_rate is None else self.adversary_learning_rate

    def head(self, widths) -> tuple[int, ...]:
        widths = tuple(widths)
        return widths if widths and widths[-1] == 1 else widths + (1,)

    def to_dict(self) -> dict:
        return {"theta": list(self.theta), "phi": list(self.phi), "psi": list(self.psi),
                "patience": self.patience, "learning_rate": self.learning_rate, "batch_norm": self.batch_norm,
                "adversary_learning_rate": self.adversary_learning_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        unknown = set(d) - {"theta", "phi", "psi", "patience", "learning_rate", "batch_norm",
                            "adversary_learning_rate"}
        if unknown:
            raise ConfigurationError(f"unknown architecture keys: {sorted(unknown)}")
        adv = d.get("adversary_learning_rate")
        return cls(tuple(d["theta"]), tuple(d["phi"]), tuple(d["psi"]), int(d["patience"]),
                   float(d["learning_rate"]), bool(d.get("batch_norm", True)), None if adv is None else float(adv))


def _a(theta, phi, psi, patience, lr, bn=True):
    return Architecture(tuple(theta), tuple(phi), tuple(psi), patience, lr, bn)


TABLE: dict[str, dict[str, Architecture]] = {
    "adult": {
        "Reweighing_NN": _a([], [62, 41, 27, 1], [], 10, 1e-3),
        "FAD": _a([62, 41, 27], [18, 12, 1], [18, 12, 1], 50, 1e-4),
        "FAD_prob": _a([46, 23, 23], [11, 1], [11, 1], 50, 1e-4, bn=False),
        "FAIR_scalar": _a([62, 41, 27, 1], [62, 41, 1], [62, 1], 50, 1e-4),
        "FAIR_betaSF": _a([62, 41, 27, 2], [62, 41, 1], [62, 1], 50, 1e-4),
        "FAIR_betaREP": _a([62, 41, 27, 2], [62, 41], [62, 1], 50, 1e-5),
        "FAIR_Bernoulli": _a([62, 41, 1], [62, 41, 27, 1], [62, 1], 500, 1e-4),
    },
    "readmission": {
        "Reweighing_NN": _a([], [464, 232, 116, 1], [], 10, 1e-3),
        "FAD": _a([464, 232, 116], [58, 1], [58, 1], 40, 1e-4),
        "FAD_prob": _a([464, 232, 232], [116, 58, 1], [116, 58, 1], 40, 1e-4, bn=False),
        "FAIR_scalar": _a([464, 232, 1], [464, 1], [464, 1], 40, 1e-4),
        "FAIR_betaSF": _a([464, 232, 2], [464, 1], [464, 1], 40, 1e-5),
        "FAIR_betaREP": _a([464, 232, 2], [464, 1], [464, 1], 40, 1e-5),
        "FAIR_Bernoulli": _a([464, 1], [464, 232, 1], [464, 1], 40, 1e-4),
    },
    "expenditures": {
        "Reweighing_NN": _a([], [91, 60, 1], [], 10, 1e-3),
        "FAD": _a([68, 34, 17], [8, 1], [8, 1], 50, 1e-4),
        "FAD_prob": _a([68, 34, 34], [17, 1], [17, 1], 50, 1e-4, bn=False),
        "FAIR_scalar": _a([68, 34, 1], [68, 1], [68, 1], 50, 1e-4),
        "FAIR_betaSF": _a([68, 34, 2], [68, 1], [68, 1], 50, 1e-5),
        "FAIR_betaREP": _a([68, 34, 2], [68, 1], [68, 1], 50, 1e-5),
        "FAIR_Bernoulli": _a([68, 1], [68, 34, 1], [68, 1], 50, 1e-4),
    },
    "german_sex": {
        "Reweighing_NN": _a([], [37, 24, 1], [], 10, 1e-3),
        "FAD": _a([37, 24, 1], [16, 1], [16, 1], 60, 1e-4),
        "FAD_prob": _a([28, 14, 14], [7, 1], [7, 1], 50, 1e-5, bn=False),
        "FAIR_scalar": _a([37, 1], [1], [1], 50, 1e-4),
        "FAIR_betaSF": _a([37, 2], [1], [1], 60, 1e-5),
        "FAIR_betaREP": _a([37, 2], [1], [1], 60, 1e-5),
        "FAIR_Bernoulli": _a([37, 1], [1], [1], 60, 1e-4),
    },
    "german_age": {
        "Reweighing_NN": _a([], [37, 24, 1], [], 10, 1e-3),
        "FAD": _a([37, 24, 1], [16, 1], [16, 1], 50, 1e-4),
        "FAD_prob": _a([28, 14, 14], [7, 1], [7, 1], 50, 1e-5, bn=False),
        "FAIR_scalar": _a([37, 1], [37, 1], [1], 50, 1e-4),
        "FAIR_betaSF": _a([37, 2], [37, 1], [1], 50, 1e-5),
        "FAIR_betaREP": _a([37, 2], [37, 1], [1], 50, 1e-5),
        "FAIR_Bernoulli": _a([37, 1], [37, 1], [1], 50, 1e-4),
    },
}


# Not part of the published table: the bundled synthetic fixture reuses the
# German-sex widths with a 10x faster schedule and an adversary that learns
# faster still, so that the sensitive network identifies the group before the
# predictor has fitted the biased segment.
TABLE["synthetic"] = {
    fam: Architecture(arch.theta, arch.phi, arch.psi, 60 if fam != "Reweighing_NN" else 10, 1e-3,
                      arch.batch_norm, None if fam == "Reweighing_NN" else 1e-2)
    for fam, arch in TABLE["german_sex"].items()
}
SYNTHETIC_MAX_EPOCHS = 1000


def default_architecture(dataset: str, family: str) -> Architecture:
    try:
        return TABLE[dataset][family]
    except KeyError:
        raise ConfigurationError(f"no default architecture for dataset={dataset!r}, family={family!r}") from None


def all_architectures():
    """Yield ``(dataset, family, input_width, Architecture)`` for every published table row."""
    for ds, rows in TABLE.items():
        if ds == "synthetic":
            continue
        for fam, arch in rows.items():
            yield ds, fam, INPUT_WIDTHS[ds], arch
