from physmorph.diagnostics.gradcheck import (
    SUITES,
    central_difference,
    relative_error,
    run_gradcheck,
)
