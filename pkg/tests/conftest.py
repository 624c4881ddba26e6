import pytest

import wsproute as w


def make_problem(seed=7, n=(12, 12), k=(4, 4), rows=2, width=24, **kw):
    return w.generate_problem(
        w.GenConfig(n_instterms=n, nets_count=k, rows=rows, width=width, seed=seed, **kw)
    )


@pytest.fixture
def small_problem():
    return make_problem()


@pytest.fixture
def sensitive_inst():
    """3-pair instance whose route cost depends on pair order (15 vs 16)."""
    p = make_problem(seed=21, n=(6, 8), k=(2, 3), rows=1, width=5)
    return w.build_instance(p)


@pytest.fixture
def congested_4pair_inst():
    """4-pair instance with cost spread 16..21 across orders."""
    p = make_problem(seed=21, n=(8, 10), k=(3, 4), rows=1, width=6)
    return w.build_instance(p)
