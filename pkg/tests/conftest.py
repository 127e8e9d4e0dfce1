import pytest
import torch
import torchvision.models as tvm

from porcelain_mtl import build_taxonomy
from porcelain_mtl.data import generate_synthetic_dataset, load_manifest
from porcelain_mtl.model import WEIGHTS_DIR_ENV, weights_filename

_ACCEPTANCE: dict[str, tuple[str, float]] = {}


@pytest.fixture(scope="session")
def taxonomy():
    return build_taxonomy()


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """24 synthetic images at 64 px with their manifest."""
    root = tmp_path_factory.mktemp("small_synth")
    manifest = generate_synthetic_dataset(24, 3, root, image_side=64)
    return manifest, load_manifest(manifest, build_taxonomy())


_BUILDERS = {
    "resnet50": lambda: tvm.resnet50(weights=None),
    "mobilenetv2": lambda: tvm.mobilenet_v2(weights=None),
    "vgg16": lambda: tvm.vgg16(weights=None),
    "inceptionv3": lambda: tvm.inception_v3(weights=None, aux_logits=True, init_weights=False),
}


@pytest.fixture(scope="session")
def stand_in_weights_dir(tmp_path_factory):
    """Weights cache holding randomly initialised torchvision checkpoints.

    The sandbox cannot reach the public checkpoint host, so the pretrained
    code path is exercised against files with the right names and layouts.
    """
    root = tmp_path_factory.mktemp("weights")
    made = set()

    def ensure(*archs):
        for arch in archs:
            if arch in made:
                continue
            torch.manual_seed(0)
            torch.save(_BUILDERS[arch]().state_dict(), root / weights_filename(arch))
            made.add(arch)
        return root

    return ensure


@pytest.fixture
def pretrained_env(stand_in_weights_dir, monkeypatch):
    def activate(*archs):
        root = stand_in_weights_dir(*archs)
        monkeypatch.setenv(WEIGHTS_DIR_ENV, str(root))
        return root

    return activate


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when == "teardown" or (rep.when == "setup" and rep.passed):
        return
    label = marker.args[0]
    _ACCEPTANCE[label] = ("PASS" if rep.passed else "FAIL", rep.duration)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][1:])):
        status, dur = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{status}  {label}  ({dur:.1f}s)")
