#include "mixtac/cli.hpp"

int main(int argc, char** argv) { return mixtac::cli::run(argc, argv); }
