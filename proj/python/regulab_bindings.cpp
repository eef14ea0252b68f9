#include <pybind11/pybind11.h>
PYBIND11_MODULE(_regulab, m) { m.doc() = "regulab core bindings"; }
