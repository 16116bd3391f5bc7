#include "twincher/cli.hpp"

int main(int argc, char** argv) { return twincher::cli::run(argc, argv); }
