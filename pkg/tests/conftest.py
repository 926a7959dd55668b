from pathlib import Path

import pytest

from trimark import PartitionParams, ToyMarkovModel

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus_path() -> Path:
    return FIXTURES / "corpus.txt"


@pytest.fixture(scope="session")
def corpus_text(corpus_path) -> str:
    return corpus_path.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def toy_model(corpus_path) -> ToyMarkovModel:
    return ToyMarkovModel.from_text_file(corpus_path, order=2)


@pytest.fixture
def default_params() -> PartitionParams:
    return PartitionParams()


def load_golden_vectors() -> dict[str, list]:
    """Parse fixtures/golden_vectors.txt into per-section input/output tuples."""
    sections: dict[str, list] = {"hash64": [], "seed_from_context": [], "uniform_stream": []}
    current: str | None = None
    for line in (FIXTURES / "golden_vectors.txt").read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            current = line.strip("[]")
            continue
        parts = line.split()
        if current == "hash64":
            sections[current].append((int(parts[0], 16), int(parts[1], 16)))
        elif current == "seed_from_context":
            context = [] if parts[1] == "-" else [int(t, 16) for t in parts[1].split(",")]
            sections[current].append((int(parts[0], 16), context, int(parts[2], 16)))
        elif current == "uniform_stream":
            sections[current].append(
                (int(parts[0], 16), int(parts[1]), int(parts[2], 16), float.fromhex(parts[3]))
            )
    return sections
