#include "cross_cli.hpp"

int main(int argc, char** argv) { return cross::cli::run(argc, argv); }
