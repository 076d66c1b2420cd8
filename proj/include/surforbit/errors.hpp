#pragma once

#include <stdexcept>
#include <string>

namespace surforbit {

// Base class for everything the library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Chart evaluated outside its validity set; message names the chart.
struct ChartDomainError : Error {
    using Error::Error;
};

// Metric determinant below tolerance (immersion failure).
struct DegenerateChartError : Error {
    using Error::Error;
};

// grad b vanished on the boundary zero set.
struct IrregularBoundaryError : Error {
    using Error::Error;
};

// No chart of the atlas covers the requested point.
struct AtlasError : Error {
    using Error::Error;
};

struct MeshError : Error {
    using Error::Error;
};

// Config file problems; carries line/column when known.
struct ConfigError : Error {
    int line = 0, column = 0;
    ConfigError(const std::string& msg, int line_ = 0, int column_ = 0)
        : Error(msg), line(line_), column(column_) {}
};

// Scenario-level evaluation failure (non-finite force, bad bounds, ...).
struct ScenarioError : Error {
    using Error::Error;
};

// Integration failure (step-size underflow and friends).
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace surforbit
