#include "cli.hpp"

int main(int argc, char** argv) { return vcins::cli::run(argc, argv); }
