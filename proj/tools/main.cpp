#include "mmbridge/cli.hpp"

int main(int argc, char** argv) { return mmbridge::cli::run(argc, argv); }
