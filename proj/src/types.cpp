#include "alcove/types.hpp"

namespace alcove {

Matrix gather_rows(const Matrix& m, const IndexList& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

}  // namespace alcove
