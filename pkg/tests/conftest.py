"""Shared expensive objects, computed once per test session."""
from __future__ import annotations

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def dr_solution():
    from d4dr.dr_classical import solve_dr_g11

    return solve_dr_g11()


@pytest.fixture(scope="session")
def g11(dr_solution):
    return dr_solution.density


@pytest.fixture(scope="session")
def dr_table(g11):
    from d4dr.dr_classical import dr_hierarchy

    return dr_hierarchy(g11, max_d=2)


@pytest.fixture(scope="session")
def dr_miura(dr_table):
    from d4dr.dr_classical import normal_miura

    return normal_miura(dr_table)


@pytest.fixture(scope="session")
def quantum_solution(g11):
    from d4dr.dr_quantum import solve_quantum_g11

    return solve_quantum_g11(g11)


@pytest.fixture(scope="session")
def quantum_table(quantum_solution):
    from d4dr.dr_quantum import quantum_hierarchy

    return quantum_hierarchy(quantum_solution.hamiltonian.density, max_d=1)


@pytest.fixture(scope="session")
def verify_context(dr_solution, dr_table, dr_miura, quantum_solution):
    """A verification context sharing the session's DR and quantum solves."""
    from d4dr.verify import Context

    ctx = Context()
    ctx.__dict__.update(dr_solution=dr_solution, dr_table=dr_table, dr_miura=dr_miura, quantum_solution=quantum_solution)
    return ctx


@pytest.fixture(scope="session")
def classical_commutativity_failures(dr_table):
    """Non-commuting pairs among g-bar_{alpha,p}, p <= 2 (expected: none)."""
    return dr_table.commutativity_failures(2)


@pytest.fixture(scope="session")
def quantum_commutativity_failures(quantum_table):
    """Non-commuting pairs among G-bar_{alpha,p}, p <= 1 (expected: none)."""
    from d4dr.dr_quantum import quantum_commutativity_failures

    return quantum_commutativity_failures(quantum_table, 1)
