from physmorph.scene.shapes import (
    Box,
    Capsule,
    Cylinder,
    EmptyShapeError,
    Heart,
    Pillar,
    Shape,
    Sphere,
    Torus,
    make_shape,
)
from physmorph.scene.mesh import MeshShape, is_watertight, load_obj, sample_triangles, voxelize
from physmorph.scene.particles import init_particles
from physmorph.scene.snapshot import (
    SNAPSHOT_VERSION,
    SnapshotFormatError,
    export_snapshot,
    import_snapshot,
)
from physmorph.scene.images import read_pnm, write_pgm16, write_ppm
from physmorph.scene.experiment_log import append_rows, read_rows
