#include "jamlab/cli.hpp"

int main(int argc, char** argv) { return jamlab::cli::main(argc, argv); }
