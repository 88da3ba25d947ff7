#include "fawn/detail/parallel.hpp"

#include <thread>

namespace fawn::detail {

int& thread_cap_ref() {
    static int cap = 0;
    return cap;
}

void set_thread_cap(int n) { thread_cap_ref() = n < 0 ? 0 : n; }

int effective_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    int n = hw == 0 ? 1 : static_cast<int>(hw);
    int cap = thread_cap_ref();
    if (cap > 0 && cap < n) n = cap;
    return n;
}

}  // namespace fawn::detail
