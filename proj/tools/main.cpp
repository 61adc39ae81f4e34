#include "lowems/cli.hpp"

int main(int argc, char** argv) { return lowems::cli::run(argc, argv); }
