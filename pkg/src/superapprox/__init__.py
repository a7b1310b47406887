"""Desk-scale computational lab for expansion in congruence quotients of SL_n(Z)."""

from .errors import (GroupTooLarge, HypothesisFailed, MaxIterations, ModulusMismatch, NotInvertible,
                     NotSpecialLinear, NotSymmetric, PostconditionFailed, SearchBudgetExceeded,
                     TableMismatch, Unsupported)
from .modgroup import GroupTable, ResidueMatrix, SubsetHandle, SymmetricGenSet, enumerate_group, lubotzky
from .walk import Measure, spectral_gap, uniform_on

__version__ = "0.1.0"
