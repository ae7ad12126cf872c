"""The four-point confidentiality x integrity lattice."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class Conf(IntEnum):
    PUBLIC = 0
    SECRET = 1


class Integ(IntEnum):
    TRUSTED = 0
    UNTRUSTED = 1


@dataclass(frozen=True, order=False)
class Level:
    conf: Conf
    integ: Integ

    def join(self, other: Level) -> Level:
        return Level(max(self.conf, other.conf), max(self.integ, other.integ))

    def meet(self, other: Level) -> Level:
        return Level(min(self.conf, other.conf), min(self.integ, other.integ))

    def leq(self, other: Level) -> bool:
        return self.conf <= other.conf and self.integ <= other.integ

    __or__ = join
    __and__ = meet
    __le__ = leq

    @property
    def public(self) -> bool:
        return self.conf is Conf.PUBLIC

    @property
    def trusted(self) -> bool:
        return self.integ is Integ.TRUSTED

    def __str__(self) -> str:
        return f"({self.conf.name.lower()}, {self.integ.name.lower()})"


PT = Level(Conf.PUBLIC, Integ.TRUSTED)
PU = Level(Conf.PUBLIC, Integ.UNTRUSTED)
ST = Level(Conf.SECRET, Integ.TRUSTED)
SU = Level(Conf.SECRET, Integ.UNTRUSTED)

BOTTOM = PT
TOP = SU
LEVELS = (PT, PU, ST, SU)


def lattice_ops(l1: Level, l2: Level) -> dict:
    return {"join": l1.join(l2), "meet": l1.meet(l2), "leq": l1.leq(l2)}


def parse_level(conf: str, integ: str) -> Level:
    return Level(Conf[conf.upper()], Integ[integ.upper()])
