import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = resources.files("sbvr_itsm") / "data"

# the reference vocabulary, NR sentence on one line
LISTING1_SOURCE = """T:SLA
T:SVC
T:total fines
F: SLA has total fines
F:SLA is linked to SVC
NR: For an SLA that is linked to an SVC it is obligatory that the total fines of the new SLA are less than the total fines of the old SLA.
"""

LISTING1_TRIGGER = """CREATE TRIGGER "NR1" BEFORE UPDATE OF "SLA_id"
ON "SLA-is_linked_to-SVC"
WHEN NOT
(SELECT "total fines" from "SLA" where id=new.SLA_id)<
(SELECT "total fines" from "SLA" where id=old.SLA_id)
BEGIN
SELECT RAISE(ABORT, 'Requirement of NR1 not met');
END;"""


@pytest.fixture
def listing1_source():
    return LISTING1_SOURCE


@pytest.fixture
def listing1_vocab():
    from sbvr_itsm.vocab import parse_vocabulary

    return parse_vocabulary(LISTING1_SOURCE)


@pytest.fixture
def sample_tree_path():
    return str(DATA / "figure1.tree")


@pytest.fixture
def sample_tree(sample_tree_path):
    from sbvr_itsm.tree import load_tree

    return load_tree(Path(sample_tree_path).read_text())


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
