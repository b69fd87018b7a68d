#include "discreg/parallel.hpp"

#include <omp.h>

#include <algorithm>

namespace discreg {

void set_thread_count(int n)
{
    omp_set_num_threads(std::max(n, 1));
}

int thread_count()
{
    return omp_get_max_threads();
}

} // namespace discreg
