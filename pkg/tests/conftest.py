import itertools
from fractions import Fraction

import pytest

from ainfty.exactalg import Presentation
from ainfty.resolution import ResolutionAlgebra


def monomials_upto(pres, gens, max_degree):
    """Normal monomials (as Elements) of degree <= max_degree in the given generators."""
    from ainfty.exactalg import NILPOTENT, monomial

    out = []
    for d in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(gens, d):
            counts = {}
            for g in combo:
                counts[g] = counts.get(g, 0) + 1
            if any(k in NILPOTENT and c > 1 for (k, _), c in counts.items()):
                continue
            e = monomial(pres, [(k, i, c) for (k, i), c in counts.items()])
            if not e.is_zero():
                out.append(e)
    return out


@pytest.fixture(scope="session")
def poly2():
    return ResolutionAlgebra(2)


@pytest.fixture(scope="session")
def z2alg():
    return ResolutionAlgebra(2, twist=[-1, -1], truncation=5)


@pytest.fixture(scope="session")
def vasalg():
    q = Fraction(2)
    return ResolutionAlgebra(2, kind="vasiliev", twist=[q, 1 / q], lam=[[0, 1], [-1, 0]],
                             truncation=5)


@pytest.fixture(scope="session")
def weyl_z2():
    return Presentation(n=2, m=1, q=[[-1, -1]], weyl=True)
