import pytest

from xva.data import SynthConfig, generate_synthetic


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_criterion" in report.nodeid:
        name = report.nodeid.split("::")[-1].replace("test_", "").replace("_", " ")
        print(f"\n[{'PASS' if report.passed else 'FAIL'}] {name}", flush=True)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small 32px tree (2 affordances, 4 objects) for fast end-to-end tests."""
    root = tmp_path_factory.mktemp("tiny_data")
    cfg = SynthConfig(n_affordances=2, n_objects=4, images_per_object=4, size=32, seed=7)
    generate_synthetic(cfg, str(root))
    return str(root)


@pytest.fixture(scope="session")
def bench_dataset(tmp_path_factory):
    """The default-scale synthetic benchmark (5 affordances, 10 objects, 64px)."""
    root = tmp_path_factory.mktemp("bench_data")
    generate_synthetic(SynthConfig(), str(root))
    return str(root)


def tiny_run_config(**overrides):
    from xva.config import RunConfig, validate_config

    base = dict(image_size=32, channels=8, nmf_channels=4, rank=4, head_dim=8,
                n_classes=2, n_exo=2, epochs=1, seed=3)
    base.update(overrides)
    return validate_config(RunConfig(**base))
