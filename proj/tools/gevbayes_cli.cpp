#include "gevbayes/cli.hpp"

int main(int argc, char** argv) { return gevbayes::cli::run(argc, argv); }
