"""
Pytest configuration and shared fixtures for the tagging simulator tests
"""

import os
import sys

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from qtag.config import AdversaryConfig, AdversaryKind, Geometry, SchemeConfig, SchemeId  # noqa: E402


@pytest.fixture
def rng():
    """Seeded generator"""
    return np.random.default_rng(12345)


@pytest.fixture
def geometry():
    """Standard line: A0 at 0, tag at 5, A1 at 10"""
    return Geometry(a0=0.0, t_plus=5.0, a1=10.0)


@pytest.fixture
def make_scheme(geometry):
    """Factory for scheme configs on the standard line"""
    def _make(scheme_id, rounds=10, **kwargs):
        geo = kwargs.pop("geometry", geometry)
        return SchemeConfig(scheme_id=SchemeId(scheme_id), geometry=geo, rounds=rounds, **kwargs)
    return _make


@pytest.fixture
def make_adversary():
    """Factory for adversary configs with sites at 2 and 8"""
    def _make(kind, **kwargs):
        kwargs.setdefault("e0", 2.0)
        kwargs.setdefault("e1", 8.0)
        return AdversaryConfig(kind=AdversaryKind(kind), **kwargs)
    return _make
