"""Named flop counters shared by the channel assembly and SINR stages."""

from dataclasses import dataclass, fields

__all__ = ["FlopLedger"]


@dataclass
class FlopLedger:
    """Per-stage flop counts (unit constants for every O(.) term)."""

    reconstruct: int = 0
    precoder: int = 0
    covariance: int = 0
    inverse: int = 0
    filter: int = 0
    sinr: int = 0

    def charge(self, stage: str, amount: int) -> None:
        if amount < 0:
            raise ValueError(f"negative flop charge {amount} for {stage!r}")
        if stage not in self.stages():
            raise KeyError(f"unknown ledger stage {stage!r}")
        setattr(self, stage, getattr(self, stage) + int(amount))

    @staticmethod
    def stages():
        return tuple(f.name for f in fields(FlopLedger))

    @property
    def total(self) -> int:
        return sum(getattr(self, s) for s in self.stages())

    def as_dict(self):
        d = {s: getattr(self, s) for s in self.stages()}
        d["total"] = self.total
        return d

    def __add__(self, other):
        if not isinstance(other, FlopLedger):
            return NotImplemented
        return FlopLedger(**{s: getattr(self, s) + getattr(other, s)
                             for s in self.stages()})
