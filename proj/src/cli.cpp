namespace atten {}
