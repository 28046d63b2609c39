#include "sepnp/app.hpp"

int main(int argc, char** argv) { return sepnp::cli_main(argc, argv); }
