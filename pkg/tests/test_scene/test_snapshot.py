import numpy as np
import pytest

from physmorph.scene import SNAPSHOT_VERSION, SnapshotFormatError, export_snapshot, import_snapshot
from physmorph.scene.snapshot import VALUES_PER_PARTICLE
from tests.utils import random_state


def test_snapshot_preserves_state(tmp_path, rng):
    state = random_state(17, rng)
    path = str(tmp_path / "nested" / "state.pmgs")
    export_snapshot(state, path)
    assert (tmp_path / "nested" / "state.pmgs").stat().st_size == 16 + 17 * 25 * 8
    assert import_snapshot(path).bit_equal(state)


def test_empty_snapshot(tmp_path, rng):
    state = random_state(0, rng)
    path = str(tmp_path / "empty.pmgs")
    export_snapshot(state, path)
    assert import_snapshot(path).count == 0


def _write(path, content):
    with open(path, "wb") as f:
        f.write(content)


def test_malformed_snapshots(tmp_path, rng):
    path = str(tmp_path / "state.pmgs")
    export_snapshot(random_state(3, rng), path)
    with open(path, "rb") as f:
        content = f.read()

    _write(path, content[:-8])
    with pytest.raises(SnapshotFormatError, match="truncated"):
        import_snapshot(path)

    _write(path, content[:10])
    with pytest.raises(SnapshotFormatError, match="header"):
        import_snapshot(path)

    _write(path, b"XXXX" + content[4:])
    with pytest.raises(SnapshotFormatError, match="magic"):
        import_snapshot(path)

    version = np.array([SNAPSHOT_VERSION + 1], dtype="<u4").tobytes()
    _write(path, content[:4] + version + content[8:])
    with pytest.raises(SnapshotFormatError, match="version"):
        import_snapshot(path)

    _write(path, content + b"\x00" * 8 * VALUES_PER_PARTICLE)
    with pytest.raises(SnapshotFormatError):
        import_snapshot(path)
