#pragma once

#include <stdexcept>
#include <string>

namespace msinfer {

//! Bad user input: malformed data, out-of-range parameters, dimension mismatch.
class InvalidArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

//! Numerical failure: empty critical set, no active nodes, degenerate data.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

//! Kernel regression query where the total kernel weight underflows.
class FarFromDataError : public NumericalError {
public:
    FarFromDataError(const std::string& msg, double nearest_distance)
        : NumericalError(msg), nearest_distance(nearest_distance) {}
    double nearest_distance;
};

//! A coordinate with zero variance; standardization is impossible.
class DegenerateCoordinateError : public NumericalError {
public:
    DegenerateCoordinateError(const std::string& msg, int coordinate)
        : NumericalError(msg), coordinate(coordinate) {}
    int coordinate;
};

//! Prediction query outside the model's domain box.
class ExtrapolationError : public InvalidArgumentError {
public:
    ExtrapolationError(const std::string& msg, int nearest_cell)
        : InvalidArgumentError(msg), nearest_cell(nearest_cell) {}
    int nearest_cell;
};

class CsvParseError : public InvalidArgumentError {
public:
    CsvParseError(const std::string& msg, long line)
        : InvalidArgumentError(msg), line(line) {}
    long line;
};

} // namespace msinfer
