#include "raterlab/cli.hpp"

int main(int argc, char** argv) { return raterlab::cli::run(argc, argv); }
