"""Hand-built one-node instances for arithmetic checks."""
import numpy as np

from mhres.instance import (DeferrableLoad, DiscomfortPolicy, DiscomfortProfile, ElasticLoad,
                            GridParams, Instance, Loads, PvTechnology, SystemLimits)
from mhres.tree import MultiHorizonTree, Stage


def one_node(load_kw=1.0, price=0.3, hours=(1,), pv=False, elastic=None, deferrable=None):
    """Single strategic node, one day, one operational scenario.

    Period lengths are free here (no 24-hour day), so these instances are
    not passed through validation.
    """
    T = len(hours)
    tree = MultiHorizonTree([Stage(days=1, hours=tuple(hours), pv_periods=frozenset(range(T)))],
                            [None], [1], [[1]])
    techs = []
    if pv:
        techs.append(PvTechnology("pv", 1.0, 10.0, np.array([0.0]), np.array([100.0]),
                                  np.array([0.0]), np.array([50.0]), [np.zeros((1, T))],
                                  [np.ones((1, T))]))
    loads = Loads(base=[np.full((1, T), float(load_kw))],
                  elastic=elastic or [], deferrable=deferrable or [])
    grid = GridParams([np.full((1, T), float(price))], [np.zeros((1, T))])
    pol = DiscomfortPolicy([100.0], [[DiscomfortProfile(100.0, 0.05, 0.25, 0.05)]])
    return Instance(tree, techs, [], SystemLimits(10.0, 0.0, 0, 0, np.array([1e6])), loads, grid, pol)


def elastic_load(T, D1=5.0, setpoint=3.0, max_curtail=2.0):
    return ElasticLoad("el", [np.full((1, T), setpoint)], [frozenset(range(T))],
                       [np.full(T, max_curtail)], [np.full(T, 10.0)], [np.full(T, D1)])


def deferrable_load(T, tau=0, rate=2.0, power=1.0, duration=1):
    disc = np.array([rate * abs(t - tau) for t in range(T)])
    return DeferrableLoad("d", [tau], [power], [duration], [frozenset(range(T))], [disc])
