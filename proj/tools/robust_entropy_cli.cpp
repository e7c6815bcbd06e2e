#include "robust_entropy/cli.hpp"

int main(int argc, char** argv) { return robust_entropy::cli::run(argc, argv); }
