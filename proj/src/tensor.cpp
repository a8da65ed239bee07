#include "tdcn/tensor.hpp"

#include <sstream>

namespace tdcn {

std::string Shape::str() const {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < d.size(); ++i) {
        if (i) os << ',';
        os << d[i];
    }
    os << ')';
    return os.str();
}

} // namespace tdcn
