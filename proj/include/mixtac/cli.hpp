#pragma once

namespace mixtac::cli {

// Dispatch for the mixtac tool; exits 0 on success, 1 on validation errors
// (bad flags, missing files), 2 on runtime failures.
int run(int argc, const char* const* argv);

} // namespace mixtac::cli
