#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ratrack {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Thrown when inputs violate a documented precondition or a file fails
// validation. Maps to CLI exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on filesystem/IO failures. Maps to CLI exit code 2.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shortest decimal representation that parses back to the identical double.
std::string format_double(double v);

// Strict full-string double parse; throws ValidationError on junk.
double parse_double(const std::string& s);
long long parse_int(const std::string& s);

}  // namespace ratrack
