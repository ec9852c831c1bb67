"""Cross-validation against the TypeScript weight converter.

Runs the converter CLI on its synthetic checkpoint fixture and checks
that this engine's forward pass reproduces the activations the
converter recorded in its manifest. Skipped when the converter has not
been built (npm install && npm run build in converter/).
"""

import hashlib
import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from ghostlayer.network import forward_features, load_weights

CLI = Path(__file__).resolve().parent.parent / "converter" / "dist" / "cli.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not CLI.exists(),
    reason="converter not built (node + converter/dist/cli.js required)",
)


def run_cli(*args):
    proc = subprocess.run(
        ["node", str(CLI), *args], capture_output=True, text=True, timeout=600
    )
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.fixture(scope="module")
def converted(tmp_path_factory):
    d = tmp_path_factory.mktemp("converted")
    run_cli("make-fixture", str(d / "checkpoint"))
    glw = d / "weights.glw"
    manifest_path = d / "manifest.json"
    run_cli("convert", str(d / "checkpoint" / "model.json"), str(glw),
            "--manifest", str(manifest_path))
    return glw, json.loads(manifest_path.read_text())


def test_glw_output_loads_and_validates(converted):
    glw, manifest = converted
    weights = load_weights(glw)
    assert len(weights.kernels) == 16
    assert weights.kernels["conv1_1"].weights.shape == (64, 3, 3, 3)
    np.testing.assert_allclose(
        weights.preprocess_mean, manifest["preprocessMean"], rtol=1e-6
    )


def test_fixture_activations_match_engine(converted):
    glw, manifest = converted
    weights = load_weights(glw)
    fixture = manifest["fixture"]
    x = np.asarray(fixture["input"], np.float32).reshape(1, *fixture["inputShape"])
    taps = list(fixture["activations"])
    features, _ = forward_features(x, weights, taps)
    for name, recorded in fixture["activations"].items():
        theirs = np.asarray(recorded["values"], np.float32).reshape(recorded["shape"])
        ours = features[name].values[0]
        # relative error measured normwise and against the layer's
        # activation scale: near-zero entries carry f32 rounding noise
        # from both sides, so elementwise ratios there are meaningless
        err = np.abs(ours - theirs)
        scale = np.abs(theirs).max()
        norm_rel = np.linalg.norm(err) / np.linalg.norm(theirs)
        assert norm_rel <= 1e-4, f"{name}: normwise relative error {norm_rel:.2e}"
        assert err.max() <= 1e-4 * scale, f"{name}: max drift {err.max():.2e} vs scale {scale:.2e}"


def test_round_trip_hash_stable(converted, tmp_path):
    glw, manifest = converted
    digest = hashlib.sha256(glw.read_bytes()).hexdigest()
    assert digest == manifest["output"]["sha256"]
    # converting the same source again reproduces the identical file
    glw2 = tmp_path / "again.glw"
    run_cli("convert", manifest["source"]["path"], str(glw2))
    assert hashlib.sha256(glw2.read_bytes()).hexdigest() == digest
    print("ACCEPTANCE PASS: converter fixture cross-check and stable round-trip hash")
