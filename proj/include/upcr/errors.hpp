#ifndef UPCR_ERRORS_HPP
#define UPCR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace upcr
{

// Malformed or out-of-contract input (bad shapes, non-finite values, m < 3, ...).
class InputError : public std::runtime_error
{
public:
    explicit InputError(const std::string &what) : std::runtime_error(what) {}
};

// Input was well-formed but the computation cannot proceed
// (degenerate covariance, ill-conditioned inverse, ...).
class NumericalError : public std::runtime_error
{
public:
    explicit NumericalError(const std::string &what) : std::runtime_error(what) {}
};

} // namespace upcr

#endif // UPCR_ERRORS_HPP
