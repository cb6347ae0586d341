"""Select the compiled kernel extension, falling back to NumPy.

Set ``SANDFLOW_PURE_PYTHON=1`` to force the fallback (used by the parity
tests and the benchmark).
"""

import os

if os.environ.get("SANDFLOW_PURE_PYTHON"):
    from ._kernels_py import (  # noqa: F401
        COMPILED,
        alg2_cell_update,
        qb_local_system,
        rt0_vertex_values,
    )
else:
    try:
        from ._kernels import (  # noqa: F401
            COMPILED,
            alg2_cell_update,
            qb_local_system,
            rt0_vertex_values,
        )
    except ImportError:
        from ._kernels_py import (  # noqa: F401
            COMPILED,
            alg2_cell_update,
            qb_local_system,
            rt0_vertex_values,
        )
