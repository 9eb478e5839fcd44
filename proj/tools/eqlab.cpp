#include "eqlab/cli.hpp"

int main(int argc, char** argv) { return eqlab::cli::run(argc, argv); }
